import sys

from pvarlab.cli import main

sys.exit(main())
