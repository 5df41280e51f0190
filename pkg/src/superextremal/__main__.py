import sys

from superextremal.cli import main

sys.exit(main())
