# Managers module