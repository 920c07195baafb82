import sys

from daplace.cli import main

# called as python -m daplace
if __name__ == '__main__':
    sys.exit(main())
