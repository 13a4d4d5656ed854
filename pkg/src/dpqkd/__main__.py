import sys

from dpqkd.cli import main

sys.exit(main())
