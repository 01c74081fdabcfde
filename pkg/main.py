import sys
from dotenv import load_dotenv
from core.cli import main

# Load ANISO_SURF_* settings from .env
load_dotenv()

if __name__ == "__main__":
    sys.exit(main())
