import sys

from sectorcalc.cli import main

sys.exit(main())
