import sys
from metacloud.cli import main

sys.exit(main())
