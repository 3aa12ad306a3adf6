import sys

from hinfgp.cli import main

sys.exit(main())
