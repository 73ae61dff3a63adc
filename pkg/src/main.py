"""Main entry point for singtraj."""
from .cli import main

if __name__ == "__main__":
    main()
