"""Allow `python -m repagg_app`."""

import sys

from repagg_app.app.main import main

sys.exit(main())
