import sys

from orsched.cli import main

sys.exit(main())
