import sys
from pathlib import Path

# Shared test-only helpers (reference scorer, synthetic case generator).
sys.path.insert(0, str(Path(__file__).parent / "tools"))

FIXTURES = Path(__file__).parent / "fixtures"
