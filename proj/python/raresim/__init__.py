# Copyright 2026 The raresim Authors
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

"""Rare-event probability estimation: crude Monte Carlo, Subset Simulation and
Bayesian Subset Simulation with a kriging surrogate."""

import json

from ._core import *  # noqa: F401,F403
from ._core import run_experiment_json


def run_experiment(config_text, jobs=0, write_files=False):
    """Run the experiment described by a config string and return the summary as a dict."""
    return json.loads(run_experiment_json(config_text, jobs, write_files))
