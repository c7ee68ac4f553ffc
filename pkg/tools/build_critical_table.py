"""Regenerate the critical-value table bundled with the package.

Usage: python3 tools/build_critical_table.py [max_dim]
"""
import sys
from pathlib import Path

from rankdcov.nulldist import CriticalValueCache, critical_value

out = Path(__file__).resolve().parents[1] / "src" / "rankdcov" / "data" / "critical_values.jsonl"
max_dim = int(sys.argv[1]) if len(sys.argv) > 1 else 10
out.unlink(missing_ok=True)
cache = CriticalValueCache(out, use_shipped=False)
for p in range(1, max_dim + 1):
    for q in range(p, max_dim + 1):
        for alpha in (0.1, 0.05, 0.01):
            v = critical_value(p, q, alpha, cache=cache)
            print(f"p={p} q={q} alpha={alpha}: {v:.4f}", flush=True)
