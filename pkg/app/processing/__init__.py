# Processing package
