"""Small helpers shared by the experiment scripts."""
import argparse
from pathlib import Path


def parser(description, default_out):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--out", default=default_out, help="output directory")
    ap.add_argument("--plot", action="store_true", help="also save a PNG (needs matplotlib)")
    return ap


def outdir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
