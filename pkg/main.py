#!/usr/bin/env python3
"""Development wrapper to run blowuplab from the repository root."""

from blowuplab.main import main

if __name__ == "__main__":
    main()
