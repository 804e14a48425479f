import sys

from redfin.cli import main

sys.exit(main())
