#!/usr/bin/env python3
"""
Pipeline command-line entry script
"""

import sys
from pathlib import Path

# Add the repository root to path so that `config` and `src` import
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.pipeline.cli import main

if __name__ == "__main__":
    sys.exit(main())
