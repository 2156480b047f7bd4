#!/usr/bin/env python
"""
Entry point for the single-copy product testing experiments
"""
import os
import sys

# Add current directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cli import main
from config import VERSION

if __name__ == '__main__':
    print("=" * 60, file=sys.stderr)
    print(f"Single-copy product testing toolkit {VERSION}", file=sys.stderr)
    print("=" * 60, file=sys.stderr)
    sys.exit(main())
