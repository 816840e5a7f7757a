import sys

from faprec.harness.cli import main

sys.exit(main())
