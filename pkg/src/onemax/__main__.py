import sys

from onemax.harness.cli import main

sys.exit(main())
