import sys

from frbsplit.cli import main

sys.exit(main())
