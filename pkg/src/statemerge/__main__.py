import sys

from statemerge.cli import main

sys.exit(main())
