# Store the version a single place. We import it in setup.py and __init__.py.
__version__ = '0.3.0'
