import sys

from svrn.cli import main

sys.exit(main())
