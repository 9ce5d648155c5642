import sys

from interlattice.cli import main

sys.exit(main())
