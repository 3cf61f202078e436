import sys

from vqnegf.cli import main

sys.exit(main())
