#!/usr/bin/env python3
"""
Script to run the rdbw command-line interface
"""

import sys
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent))

from src.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
