"""
Test configuration for pytest compatibility.

The suite is written with unittest; this file only makes the project
packages importable when pytest is used as the runner.
"""

import os
import sys

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)
