import sys

from zne.cli import main

sys.exit(main())
