# Handlers module