# Copyright 2026 The UFDA Simulator Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python front end for the UFDA simulator core."""

import json

from ._ufda import (
    ConfigError,
    DegenerateInputError,
    DivergenceError,
    Error,
    InvariantError,
    ProtocolError,
    RangeError,
    decide_shared,
    fit_gmm2,
    mutual_scores,
    schedule_rounds,
)
from . import _ufda

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "DivergenceError",
    "Error",
    "InvariantError",
    "ProtocolError",
    "RangeError",
    "decide_shared",
    "default_config",
    "fit_gmm2",
    "mutual_scores",
    "resolve_config",
    "run_experiment",
    "schedule_rounds",
]


def _text(config):
    if config is None:
        return "{}"
    if isinstance(config, str):
        return config
    return json.dumps(config)


def default_config():
    """Every setting at its default, as a dict."""
    return json.loads(_ufda.default_config())


def resolve_config(config=None):
    """Applies overrides (dict or JSON text) to the defaults and validates."""
    return json.loads(_ufda.resolve_config(_text(config)))


def run_experiment(config=None, output_dir=None):
    """Runs one experiment and returns the report as a dict.

    When output_dir is given the report files are written there too.
    """
    return json.loads(_ufda.run_experiment(_text(config), output_dir or ""))
