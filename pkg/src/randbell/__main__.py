import sys

from randbell.cli import main

sys.exit(main())
