import sys

from pantext.cli import main

sys.exit(main())
