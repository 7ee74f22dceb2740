#
# log.py - Logger
#
# Copyright 2026 The ldpe developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

""" Logging interface
"""

import logging
import os

from ldpe.config import config_dir

LOG_FORMAT = ('%(levelname)-9s * %(asctime)s [PID:%(process)d] * '
              '%(name)s * %(message)s')


def setup_logger(name='', logfile=None):
    """setup logging

    Overridding the default log level(**debug**) can be done via an
    environment variable `LDPE_LOGLEVEL`

    Available levels:

    * CRITICAL
    * ERROR
    * WARNING
    * INFO
    * DEBUG

    .. code::

        # Quieter simulation run
        $ LDPE_LOGLEVEL=INFO ldpe simulate --setting A --desk

    :params str name: logger name, the root logger by default
    :params str logfile: (optional) log file, defaults to
                         ``$LDPE_HOME/commands.log``
    :returns: a log object

    """
    if logfile is None:
        path = config_dir()
        os.makedirs(path, exist_ok=True)
        logfile = os.path.join(path, 'commands.log')
    commandslog = logging.FileHandler(logfile, 'w')
    commandslog.setFormatter(logging.Formatter(LOG_FORMAT,
                                               datefmt='%m-%d %H:%M:%S'))

    logger = logging.getLogger(name)
    env = os.environ.get('LDPE_LOGLEVEL', 'DEBUG')
    logger.setLevel(env)
    for h in list(logger.handlers):
        if isinstance(h, logging.FileHandler):
            logger.removeHandler(h)
            h.close()
    logger.addHandler(commandslog)

    return logger
