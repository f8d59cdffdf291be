# Copyright 2025 Multiview DeepFake
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.

"""Détecteur DeepFake multi-vues : vues globale, médiane et locale d'un visage,
fusionnées avec une représentation de la pose de la tête."""

from .config import ModelConfig, RunConfig, load_run_config, variant_config
from .errors import MultiviewError

__version__ = "0.1.0"

__all__ = ["ModelConfig", "MultiviewError", "RunConfig", "__version__", "load_run_config", "variant_config"]
