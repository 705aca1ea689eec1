"""One circle in the middle finds two obstacles by splitting itself.

Writes SVG frames to ./two_circles_out; about a minute on one core.
"""

import sys

from bezierflip.cli import main

out = sys.argv[1] if len(sys.argv) > 1 else "two_circles_out"
code = main(["--scenario", "two-circles", "--out", out])
print(f"exit status {code}; frames, history.csv and final_shape.json are in {out}/")
