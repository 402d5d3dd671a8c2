import sys

from rsmor.benchcli import main

sys.exit(main())
