#!/usr/bin/env python3
"""
メタモルフィックカバレッジ (MC) 計測ツール
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
