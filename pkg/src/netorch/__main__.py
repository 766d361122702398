from netorch.cli import main
import sys

sys.exit(main())
