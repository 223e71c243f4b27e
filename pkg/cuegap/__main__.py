import sys

from cuegap import main

sys.exit(main(sys.argv[1:]))
