"""Main entry point for the platelimit package when run as python -m platelimit"""

if __name__ == "__main__":
    from platelimit.cli import main

    main()
