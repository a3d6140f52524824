import sys

from fpp_lab.cli import main

sys.exit(main())
