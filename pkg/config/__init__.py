# -*- coding: utf-8 -*-
import os
from .loader import ConfigLoader, CONFIG_ENV_VAR
from .schema import (
    ClassificationConfig,
    ExpansionGridConfig,
    IndexConfig,
    PathsConfig,
    RetrievalConfig,
    RunConfig,
    SensitivityConfig,
    TrainConfig,
)

# Initialize loader with current directory
_config_dir = os.path.dirname(__file__)
_loader = ConfigLoader(_config_dir)

# Expose helpers at package level
get_config = _loader.get
all_configs = _loader.all
load_run_config = _loader.load_run_config
