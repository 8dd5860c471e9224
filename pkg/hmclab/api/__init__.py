"""REST API package for the sampler analysis service."""

from flask import Flask

from .routes import register_routes
from ..database import ResultsDatabase


class LabAPI:
    """Flask-based REST API over the closed-form analysis and the results store."""

    def __init__(self, store: ResultsDatabase):
        """Initialize the API with a results store."""
        self.app = Flask(__name__)
        self.app.config['APPLICATION_ROOT'] = '/api'
        self.store = store

        register_routes(self.app, self.store)

    def run(self, host='0.0.0.0', port=5000, debug=False):
        """Run the Flask application."""
        self.app.run(host=host, port=port, debug=debug)


def create_api(db_path="hmclab.db"):
    """Factory function to create the API instance."""
    store = ResultsDatabase(db_path)
    return LabAPI(store)
