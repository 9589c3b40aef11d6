from .app import ERROR_STATUS, StoreRegistry, create_app, error_status
