"""
Launcher for the spadrecon command line

Usage:
    python spad_recon.py <verb> [options]
    python spad_recon.py --help
"""

import sys

from spadrecon.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
