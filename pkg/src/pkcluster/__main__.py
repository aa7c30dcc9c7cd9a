import sys

from pkcluster.cli import main

sys.exit(main())
