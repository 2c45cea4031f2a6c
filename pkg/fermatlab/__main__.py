"""python -m fermatlab"""
from fermatlab.main import main

main()
