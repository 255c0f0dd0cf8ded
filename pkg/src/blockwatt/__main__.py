import sys

from blockwatt.cli import main

sys.exit(main())
