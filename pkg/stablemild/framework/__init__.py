"""
Annotation-based subcommand framework: decorate functions with @command and dispatch() discovers them.
"""
from stablemild.framework.args import Argument, Flag
from stablemild.framework.discovery import command, dispatch
