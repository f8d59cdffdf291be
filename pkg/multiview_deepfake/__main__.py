# Copyright 2025 Multiview DeepFake

import sys

from .cli import main

sys.exit(main())
