from .log import TupleLog
from .tuple_store import StoreState, TupleStore, create_store, init_store, open_or_init_store, open_store
