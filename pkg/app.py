##############################################################################
# Entry point: python app.py <analyze|scan|density|oracle|report> --study FILE
#
# Scans use a spawn-context process pool (see src/scan_manager.py), so this
# module must stay import-safe: nothing runs unless it is executed directly.
##############################################################################
import sys

from src.cli import main

if __name__ == '__main__':
    sys.exit(main())
