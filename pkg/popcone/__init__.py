from flask import Flask
from .extensions import configure_logging, load_solver_config
from .routes.relax import relax_bp
from .routes.oracle import oracle_bp
from flask_cors import CORS


def create_app():
    app = Flask(__name__, instance_relative_config=True)

    # Logging level and solver defaults come from the environment
    configure_logging()
    app.config['SOLVER_CONFIG'] = load_solver_config()

    # Register blueprints
    app.register_blueprint(relax_bp)
    app.register_blueprint(oracle_bp)

    # Same commands as the `popcone` entry point, for `flask --app popcone ...` and the test runner
    from .cli import register_commands
    register_commands(app)

    # Configure CORS with specific origins if needed in production
    CORS(app, origins=["*"], supports_credentials=True)

    @app.route('/')
    def index():
        return {'message': 'Welcome to the popcone relaxation API!'}

    return app
