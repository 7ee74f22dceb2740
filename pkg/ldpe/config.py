#
# config.py - Configuration defaults and YAML overrides
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

""" Configuration

Defaults are overridden by ``$LDPE_HOME/config.yaml`` (or a file given
with ``--config``), which in turn is overridden by command line flags.
"""

import logging
import os

import yaml

from ldpe.errors import MalformedInput

log = logging.getLogger('ldpe.config')

DEFAULTS = {
    'init_method': 'scaled-lasso-lse',
    'score_method': 'ldpe',
    'm': 4,
    'kappa0': 0.25,
    'kappa1': 0.25,
    'lambda0': 'univ',
    'theory_a': 1.1,
    'theory_eps': 1.0,
    'alpha': 0.05,
    'format': 'json',
    'grid_size': 100,
    'grid_ratio': 1e-3,
    'threads': 'auto',
    'seed': 0,
    'center': False,
    'header': False,
    'score_cache': None,
}


def config_dir():
    """ Top level configuration path

    :returns: ``$LDPE_HOME`` or ``~/.ldpe``
    :rtype: str
    """
    return os.environ.get('LDPE_HOME', os.path.expanduser('~/.ldpe'))


def load_config(path=None):
    """ Load configuration, layering a YAML file over the defaults

    Unknown keys are kept (and logged) so newer config files still load.

    :param str path: (optional) YAML file; ``config.yaml`` in
                     :func:`config_dir` is tried when omitted
    :returns: merged settings
    :rtype: dict
    """
    settings = dict(DEFAULTS)
    if path is None:
        path = os.path.join(config_dir(), 'config.yaml')
        if not os.path.exists(path):
            return settings
    try:
        with open(path) as f:
            overrides = yaml.safe_load(f.read()) or {}
    except (IOError, OSError) as e:
        raise MalformedInput(str(e), path=path)
    except yaml.YAMLError as e:
        raise MalformedInput("invalid YAML: {e}".format(e=e), path=path)
    if not isinstance(overrides, dict):
        raise MalformedInput("expected a mapping at top level", path=path)
    for k in overrides:
        if k not in DEFAULTS:
            log.warning("Unknown configuration key {k} in {p}".format(
                k=k, p=path))
    settings.update(overrides)
    log.debug("Loaded configuration from {p}: {s}".format(p=path,
                                                        s=overrides))
    return settings
