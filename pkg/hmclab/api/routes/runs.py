"""Stored benchmark run routes."""

from flask import jsonify, request

from ...database import ResultsDatabase


def register_routes(blueprint, store: ResultsDatabase):
    """Register run-related routes with the Flask blueprint."""

    @blueprint.route('/runs', methods=['GET'])
    def get_runs():
        """List stored runs, newest first."""
        try:
            limit = int(request.args.get('limit', 20))
        except ValueError:
            return jsonify({
                'status': 'error',
                'message': "limit must be an integer"
            }), 400
        return jsonify({'status': 'success', 'runs': store.list_runs(limit)})

    @blueprint.route('/runs/<int:run_id>', methods=['GET', 'DELETE'])
    def get_run(run_id):
        """Get a stored run with its rows, or delete it."""
        if request.method == 'DELETE':
            if not store.delete_run(run_id):
                return jsonify({
                    'status': 'error',
                    'message': f"Run {run_id} not found"
                }), 404
            return jsonify({
                'status': 'success',
                'message': f"Run {run_id} deleted"
            })

        run = store.get_run(run_id)
        if not run:
            return jsonify({
                'status': 'error',
                'message': f"Run {run_id} not found"
            }), 404
        return jsonify({'status': 'success', 'run': run})
