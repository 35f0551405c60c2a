"""
Eqfree CLI entrypoint when using python -m eqfree
"""

from eqfree.cli import main

if __name__ == "__main__":
    main()
