from stablemild.framework.args.model import Argument, ArgumentDefinition, Flag
