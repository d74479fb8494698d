import os
import sys

# Under ctest, import the freshly built module rather than an editable install.
if os.environ.get("DHIA_EXPECT_MODULE_DIR"):
    sys.meta_path[:] = [f for f in sys.meta_path if not type(f).__module__.startswith("_editable_skbc_")]
