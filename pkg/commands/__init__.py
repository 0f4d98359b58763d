# Pipeline subcommands of the nescope command line
