# Commands
