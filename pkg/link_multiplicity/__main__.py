import sys

from link_multiplicity.cli import main

sys.exit(main())
