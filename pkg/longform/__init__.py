# Long-form generation package
