"""WSGI entry point: gunicorn wsgi:app"""

from hmclab import create_api
from hmclab.config import get_config

config = get_config()
app = create_api(config['DB_PATH']).app
