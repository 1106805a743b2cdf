"""Regenerate the lattice-count golden tables from the brute-force counter.

    python tests/golden/make_golden.py

Writes count_d2_q{8,16}.csv (n1, n2, nu for every pair of Z^2 ∩ [0, q]^2,
s = 1.5, lambda = q) and MANIFEST with their sha256 digests.
"""
import hashlib
from pathlib import Path

from fractint.cli import csv_text
from fractint.diophantine import LatticeConfig, count_bruteforce

HERE = Path(__file__).resolve().parent
CONFIGS = {8: dict(d=2, q=8, s=1.5, lam1=8, lam2=8), 16: dict(d=2, q=16, s=1.5, lam1=16, lam2=16)}


def main():
    lines = []
    for q, kw in CONFIGS.items():
        cfg = LatticeConfig(**kw)
        tab = count_bruteforce(cfg, "exhaustive")
        name = f"count_d2_q{q}.csv"
        data = csv_text(tab.header(), tab.rows()).encode()
        (HERE / name).write_bytes(data)
        params = " ".join(f"{k}={v}" for k, v in kw.items())
        lines.append(f"{name} sha256={hashlib.sha256(data).hexdigest()} rows={len(tab.counts)} {params} method=brute\n")
    (HERE / "MANIFEST").write_text("".join(lines))


if __name__ == "__main__":
    main()
