import sys

from nbmf_annealing.cli import main

sys.exit(main())
