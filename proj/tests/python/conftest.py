import os
import sys

HERE = os.path.dirname(__file__)
ROOT = os.path.abspath(os.path.join(HERE, "..", ".."))

# the compiled module lives in the build tree during development
sys.path.insert(0, os.environ.get("RUBRICTREE_MODULE_DIR", os.path.join(ROOT, "build")))
sys.path.insert(0, os.path.join(ROOT, "python"))

os.environ.setdefault("RUBRICTREE_ASSET_DIR", os.path.join(ROOT, "assets"))
