import sys

from shuffle_gossip.cli import main

sys.exit(main())
