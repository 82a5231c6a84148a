import sys

from weakinfo.cli import main

sys.exit(main())
